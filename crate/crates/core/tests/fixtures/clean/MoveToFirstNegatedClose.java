package org.example.notes;

import android.database.Cursor;
import android.database.sqlite.SQLiteDatabase;

public class MoveToFirstNegatedClose {
    private SQLiteDatabase db;

    void show() {
        Cursor c = db.query("notes", null, null, null, null, null, null);
        if (!c.moveToFirst()) {
            c.close();
            return;
        }
        use(c);
        c.close();
    }
}
