package org.example.music;

import android.database.Cursor;
import android.database.sqlite.SQLiteDatabase;

public class GetCountZeroClose {
    private SQLiteDatabase db;

    String lastPlayed() {
        Cursor c = db.query("history", null, null, null, null, null, "ts DESC");
        if (c.getCount() == 0) {
            c.close();
            return null;
        }
        c.moveToFirst();
        String s = c.getString(0);
        c.close();
        return s;
    }

    int size() {
        Cursor c = db.rawQuery("SELECT 1", null);
        int n = 0;
        if (c != null) {
            n = c.getColumnCount();
            c.close();
        }
        return n;
    }
}
